#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace ontree::fsutil {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, fsyncs it, renames it over `path` and
/// fsyncs the directory. Readers see either the old or the new content.
void write_atomic(const std::filesystem::path& path, std::string_view data);

/// Test hook called between the steps of write_atomic with one of
/// "temp-partial", "temp-written", "renamed". Null disables it.
using FaultHook = std::function<void(std::string_view step)>;
void set_fault_hook(FaultHook hook);

}  // namespace ontree::fsutil
