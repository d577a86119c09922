#pragma once

#include "meanfield/config.hpp"

#include <optional>
#include <string>

namespace meanfield {

struct RunOptions {
  std::string out_dir = ".";
  std::optional<std::string> resume_path;
  std::optional<std::uint64_t> seed_override;  // replaces train.seed
  bool deterministic = false;  // accepted for interface stability; runs are
                               // single-threaded and deterministic regardless
};

// Exit codes: 0 success / check passed, 1 check failed, 2 config or
// precondition error, 3 numeric failure.
int cmd_train(RunConfig cfg, const RunOptions& opts);
int cmd_diag(RunConfig cfg, const std::string& which, const RunOptions& opts);
int cmd_compare(RunConfig cfg, const RunOptions& opts);
int cmd_gen_data(RunConfig cfg, const RunOptions& opts);

/// Full command-line entry point (subcommands train / diag / compare /
/// gen-data); returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace meanfield
