#include "mfglab/errors.hpp"

namespace mfglab {

void throw_config(const std::string& msg) { throw ConfigError(msg); }

}  // namespace mfglab
