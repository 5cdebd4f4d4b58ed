#pragma once

#include <cstdint>
#include <string>

namespace threer {

// SHA-1 hex digest of a byte string.
std::string sha1_hex(const std::string& data);

// Git-style blob hash: sha1("blob <size>\0" + contents).
std::string git_blob_hash_file(const std::string& path);

}  // namespace threer
