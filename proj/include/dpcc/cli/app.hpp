#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dpcc/cli/run_config.hpp"
#include "dpcc/error.hpp"
#include "dpcc/geometry/point_cloud.hpp"

namespace dpcc {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitModelMismatch = 3,
  kExitDecode = 4,
  kExitNan = 5,
};

// Bad flags, flag values or config contents.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Dataset {
  std::vector<std::string> files;         // readable ones, sorted by name
  std::vector<PointCloud> clouds;         // world frame, parallel to files
  std::vector<PointCloud> blocks;         // block frame, every cloud's blocks
};

// Every .ply and .dpcl file directly inside `dir`. Unreadable files, and files
// without normals when the codec wants them, are reported on `err` and
// skipped. Throws Error when nothing usable remains.
Dataset load_dataset(const std::string& dir, const CodecConfig& codec, std::ostream& err);

// `args` excludes the program name. Returns one of ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dpcc
