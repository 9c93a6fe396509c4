#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace tricl {

// All contract violations (shape mismatches, domain errors, non-finite
// values) surface as tricl::Error. Numerical aborts during training are
// distinguished by the NumericalError subclass so the CLI can map them
// to a dedicated exit code.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what) {}
};

namespace detail {
inline std::string msg_cat(std::ostringstream& os) { return os.str(); }
}

#define TRICL_CHECK(cond, ...)                                                 \
    do {                                                                       \
        if (!(cond)) {                                                         \
            std::ostringstream os_;                                            \
            os_ << __VA_ARGS__;                                                \
            throw ::tricl::Error(os_.str());                                   \
        }                                                                      \
    } while (0)

#define TRICL_CHECK_NUM(cond, ...)                                             \
    do {                                                                       \
        if (!(cond)) {                                                         \
            std::ostringstream os_;                                            \
            os_ << __VA_ARGS__;                                                \
            throw ::tricl::NumericalError(os_.str());                          \
        }                                                                      \
    } while (0)

} // namespace tricl
