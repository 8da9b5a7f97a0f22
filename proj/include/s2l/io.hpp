#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace s2l::io {

std::string read_text(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace s2l::io
