#pragma once

#include <string>
#include <string_view>

namespace wsnip {

// SHA-1 of "blob <size>\0<content>", hex encoded (same as `git hash-object`).
std::string git_blob_hash(std::string_view content);

std::string sha1_hex(std::string_view content);

}  // namespace wsnip
