#include <algorithm>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "commands.hpp"

namespace knitply::cli {

namespace {

struct Options {
  std::string config;
  std::string out_dir;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

// "section.key=value"
void apply_set(Config& cfg, const std::string& s) {
  const auto eq = s.find('=');
  const auto dot = s.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq || dot == 0 || dot + 1 == eq) {
    throw CLI::ValidationError("--set", "expected section.key=value, got '" + s + "'");
  }
  cfg.set(s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), s.substr(eq + 1));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Procedural knit ply modeling and rendering pipeline", "knitply"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("-c,--config", opt.config, "Pipeline config file (INI)");
  app.add_option("--out-dir", opt.out_dir, "Directory for default output names");
  app.add_option("--set", opt.sets, "Override a config value: section.key=value");
  app.add_option("--seed", opt.seed, "Random seed for render, fit and validate");
  app.add_option("--threads", opt.threads, "Render threads (0 = all)");

  struct Sub {
    CLI::App* app;
    std::string name;
  };
  std::vector<Sub> subs;
  const auto add = [&](const std::string& name, const std::string& help) {
    subs.push_back({app.add_subcommand(name, help), name});
    return subs.back().app;
  };

  std::string tile_pattern, tile_output;
  std::optional<int> tile_n, tile_m;
  bool wrap_u = false, wrap_v = false;
  auto* tile = add("tile", "Tile a pattern cell and stitch it into yarns");
  tile->add_option("pattern", tile_pattern, "Pattern file (.kcf)");
  tile->add_option("-n", tile_n, "Tiles along u");
  tile->add_option("-m", tile_m, "Tiles along v");
  tile->add_flag("--wrap-u", wrap_u, "Wrap the u boundary");
  tile->add_flag("--wrap-v", wrap_v, "Wrap the v boundary");
  tile->add_option("-o,--output", tile_output, "Yarns file to write");

  std::string plies_input, plies_output;
  auto* plies = add("plies", "Twist yarns into ply curves (PLB)");
  plies->add_option("yarns", plies_input, "Yarns file");
  plies->add_option("-o,--output", plies_output, "PLB file to write");

  std::string grid_output, map_output, render_output;
  add("grid", "Build the uv mapping grid (MGB)")->add_option("-o,--output", grid_output, "MGB file to write");
  add("map", "Map plies onto the base mesh and export them (PLB)")
      ->add_option("-o,--output", map_output, "PLB file to write");
  std::optional<int> spp;
  auto* rend = add("render", "Path trace the mapped scene (PFM, optional PNG)");
  rend->add_option("-o,--output", render_output, "PFM file to write");
  rend->add_option("--spp", spp, "Samples per pixel");
  add("fit", "Fit BSDF parameters to reference renders");
  add("validate", "Re-run the brute-force oracles at reduced scale");
  add("stats", "Summarize the artifacts named by the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const auto chosen = std::find_if(subs.begin(), subs.end(), [](const Sub& s) { return s.app->parsed(); });
  const std::string command = chosen->name;
  try {
    Config cfg = opt.config.empty() ? Config() : Config::load(opt.config);
    for (const auto& s : opt.sets) apply_set(cfg, s);
    if (opt.seed) {
      for (const char* section : {"render", "fit", "validate"}) cfg.set(section, "seed", std::to_string(*opt.seed));
    }
    if (opt.threads) cfg.set("render", "threads", std::to_string(*opt.threads));
    const auto cwd_path = [](const std::string& p) { return std::filesystem::absolute(p).string(); };
    if (!opt.out_dir.empty()) cfg.set("output", "dir", cwd_path(opt.out_dir));
    if (!tile_pattern.empty()) cfg.set("pattern", "file", cwd_path(tile_pattern));
    if (tile_n) cfg.set("pattern", "n", std::to_string(*tile_n));
    if (tile_m) cfg.set("pattern", "m", std::to_string(*tile_m));
    if (wrap_u) cfg.set("pattern", "wrap_u", "true");
    if (wrap_v) cfg.set("pattern", "wrap_v", "true");
    if (!tile_output.empty()) cfg.set("pattern", "output", cwd_path(tile_output));
    if (!plies_input.empty()) cfg.set("plies", "yarns", cwd_path(plies_input));
    if (!plies_output.empty()) cfg.set("plies", "output", cwd_path(plies_output));
    if (!grid_output.empty()) cfg.set("grid", "output", cwd_path(grid_output));
    if (!map_output.empty()) cfg.set("map", "output", cwd_path(map_output));
    if (!render_output.empty()) cfg.set("render", "output", cwd_path(render_output));
    if (spp) cfg.set("render", "spp", std::to_string(*spp));

    if (command == "tile") cmd_tile(cfg, out);
    if (command == "plies") cmd_plies(cfg, out);
    if (command == "grid") cmd_grid(cfg, out);
    if (command == "map") cmd_map(cfg, out);
    if (command == "render") cmd_render(cfg, out);
    if (command == "fit") cmd_fit(cfg, out);
    if (command == "stats") cmd_stats(cfg, out);
    if (command == "validate" && cmd_validate(cfg, out) > 0) {
      err << "knitply validate: oracle checks failed\n";
      return 2;
    }
  } catch (const CLI::Error& e) {
    err << "knitply " << command << ": " << e.what() << "\n";
    return 1;
  } catch (const StageError& e) {
    err << "knitply " << command << ": " << e.stage() << ": " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "knitply " << command << ": " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "knitply " << command << ": " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace knitply::cli
