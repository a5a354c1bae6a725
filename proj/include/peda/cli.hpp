#pragma once

// `peda` command-line entry point: generate | train | eval | metrics | front | inspect.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace peda::cli {

inline constexpr const char* kToolVersion = "0.1.0";

int dispatch(int argc, const char* const* argv);
/// `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view data);
/// Hash of a file, or of every regular file under a directory (sorted by
/// relative path, manifest files excluded).
std::string content_hash(const std::filesystem::path& path);

} // namespace peda::cli
