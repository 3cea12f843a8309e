#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "dagmath/corpus.hpp"
#include "dagmath/format.hpp"
#include "dagmath/simulator.hpp"

namespace testgen {

inline std::string fixture_path(const std::string& name) { return std::string(DAGMATH_FIXTURES) + "/" + name; }

inline dagmath::Trajectory load_trajectory_fixture(const std::string& name) {
  return dagmath::parse_trajectory(dagmath::read_file(fixture_path(name)));
}

inline dagmath::Trajectory lcp_trajectory() { return load_trajectory_fixture("lcp_trajectory.json"); }
inline dagmath::Trajectory heptagon_trajectory() { return load_trajectory_fixture("heptagon_trajectory.json"); }
inline dagmath::TaskDag lcp_task_dag() { return dagmath::load_task_dag(dagmath::read_file(fixture_path("lcp_task_dag.json"))); }

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("dagmath-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testgen
