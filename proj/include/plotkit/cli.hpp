#pragma once

#include <iosfwd>
#include <map>
#include <string>

namespace plotkit::cli {

enum ExitCode { kOk = 0, kUsage = 2, kValidation = 3, kTransport = 4, kInternal = 5 };

// Entry point of the plotkit tool. "-" paths refer to `in` / `out`.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

// Effective flat configuration: flags > PLOTKIT_<KEY> environment > config
// file > defaults.
using Settings = std::map<std::string, std::string>;

Settings default_settings();
// Applies a flat JSON object file on top of `base`. Unknown keys are usage errors.
Settings merge_config_file(Settings base, const std::string& path);
Settings merge_environment(Settings base);

}  // namespace plotkit::cli
