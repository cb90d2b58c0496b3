#pragma once

#include <iosfwd>
#include <string>
#include <utility>

#include "config.hpp"
#include "knitply/errors.hpp"
#include "knitply/render.hpp"

namespace knitply::cli {

/// A library failure tagged with the pipeline stage it came from.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

void cmd_tile(const Config& cfg, std::ostream& out);
void cmd_plies(const Config& cfg, std::ostream& out);
void cmd_grid(const Config& cfg, std::ostream& out);
void cmd_map(const Config& cfg, std::ostream& out);
void cmd_render(const Config& cfg, std::ostream& out);
void cmd_fit(const Config& cfg, std::ostream& out);
/// Returns the number of failed checks.
int cmd_validate(const Config& cfg, std::ostream& out);
void cmd_stats(const Config& cfg, std::ostream& out);

/// Mesh, plies, grid, material, camera, lights and environment named by `cfg`.
Scene load_scene(const Config& cfg);
RenderConfig load_render_config(const Config& cfg);

/// Full command line. Exit codes: 0 success, 1 usage error, 2 data or invariant error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace knitply::cli
