#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lidar_forge::cli {

enum ExitCode : int { kSuccess = 0, kPartialFailure = 1, kInvalidInvocation = 2 };

struct JobSpec {
  std::string subcommand;
  std::filesystem::path data_root;
  std::filesystem::path out_root;
  std::optional<std::filesystem::path> config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sequences;
  std::optional<std::uint32_t> first_frame;
  std::optional<std::uint32_t> last_frame;
  std::uint32_t stride = 1;
  unsigned workers = 1;

  std::optional<std::filesystem::path> db_path;  // augment, build-db
  std::size_t min_points = 20;                   // build-db
  bool undo_ego_motion = false;                  // augment
  std::string frame;                             // render: "<seq>/<frame>"
  std::string fuse_with;                         // render
};

/// Parses argv and runs the subcommand. Never throws; returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int cmd_build_db(const JobSpec& job, std::ostream& out, std::ostream& err);
int cmd_augment(const JobSpec& job, std::ostream& out, std::ostream& err);
int cmd_stats(const JobSpec& job, std::ostream& out, std::ostream& err);
int cmd_render(const JobSpec& job, std::ostream& out, std::ostream& err);

}  // namespace lidar_forge::cli
