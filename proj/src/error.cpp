#include "letf/error.hpp"

namespace letf {

ParseError::ParseError(const std::string& source, std::size_t line,
                       const std::string& what)
    : ConfigError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

}  // namespace letf
