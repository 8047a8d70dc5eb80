#pragma once

#include <string>

#include "joinsample/model.hpp"

namespace joinsample {

// Loads a JSON query specification. Relative table and lookup paths resolve
// against the spec file's directory.
JoinQuery load_query_spec(const std::string& path);

JoinQuery parse_query_spec(const std::string& json_text, const std::string& base_dir);

}  // namespace joinsample
