#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "cmpfill/cmpfill.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::vector<int> layers;
  std::string out;
  int threads = -1;
  std::vector<std::string> sets;
};

void add_run_flags(CLI::App* sub, RunFlags& f) {
  sub->add_option("--config", f.config, "run configuration file")->required()->check(CLI::ExistingFile);
  sub->add_option("--layer", f.layers, "layer to analyze (repeatable; replaces the config's layers)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--threads", f.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  sub->add_option("--set", f.sets, "override a config key, key=value (repeatable)");
}

cmpfill::RunConfig resolve(const RunFlags& f) {
  std::vector<std::string> sets = f.sets;
  if (!f.layers.empty()) {
    std::string v;
    for (int l : f.layers) v += (v.empty() ? "" : ",") + std::to_string(l);
    sets.push_back("layers=" + v);
  }
  if (!f.out.empty()) sets.push_back("out_dir=" + f.out);
  if (f.threads >= 0) sets.push_back("threads=" + std::to_string(f.threads));
  return cmpfill::load_config(f.config, sets);
}

int report(const cmpfill::RunResult& r) {
  for (const auto& a : r.artifacts) std::cout << a << "\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return r.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chip-level pattern density, post-CMP thickness and dummy fill"};
  app.require_subcommand(1);

  RunFlags density_f, thickness_f, fill_f;
  auto* density = app.add_subcommand("density", "raw and effective pattern density maps");
  add_run_flags(density, density_f);
  auto* thickness = app.add_subcommand("thickness", "post-CMP thickness map, profiles and polish target");
  add_run_flags(thickness, thickness_f);
  auto* fill = app.add_subcommand("fill", "dummy fill plans, geometry and comparison report");
  add_run_flags(fill, fill_f);

  std::string fixture, fixture_out = ".";
  std::uint64_t seed = 1;
  auto* gen = app.add_subcommand("gen-fixture", "write a synthetic layout and its config");
  gen->add_option("name", fixture, cmpfill::fixtures::fixture_names())->required();
  gen->add_option("--out", fixture_out, "output directory");
  gen->add_option("--seed", seed, "pattern seed");

  std::string conv_in, conv_out, conv_from, conv_to, conv_top;
  int conv_die_layer = 255;
  auto* convert = app.add_subcommand("convert", "convert a layout between GDSII and text");
  convert->add_option("input", conv_in)->required()->check(CLI::ExistingFile);
  convert->add_option("output", conv_out)->required();
  convert->add_option("--from", conv_from, "input format: gds or text (default: by extension)");
  convert->add_option("--to", conv_to, "output format: gds or text (default: by extension)");
  convert->add_option("--top-cell", conv_top, "top structure to flatten");
  convert->add_option("--die-layer", conv_die_layer, "layer whose boxes give the die");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cmpfill::exit_code::usage;
  }

  try {
    if (*density) return report(cmpfill::cmd_density(resolve(density_f)));
    if (*thickness) return report(cmpfill::cmd_thickness(resolve(thickness_f)));
    if (*fill) return report(cmpfill::cmd_fill(resolve(fill_f)));
    if (*gen) {
      const auto f = cmpfill::fixtures::make_fixture(fixture, seed);
      std::filesystem::create_directories(fixture_out);
      const auto dir = std::filesystem::path(fixture_out);
      const auto gds = cmpfill::gds::write_gds(f.layout);
      cmpfill::write_file((dir / (f.name + ".gds")).string(),
                          std::string_view(reinterpret_cast<const char*>(gds.data()), gds.size()));
      cmpfill::write_file((dir / (f.name + ".cfg")).string(), f.config);
      std::cout << (dir / (f.name + ".gds")).string() << "\n" << (dir / (f.name + ".cfg")).string() << "\n";
      return 0;
    }
    if (*convert) {
      using cmpfill::LayoutFormat;
      const LayoutFormat from = conv_from.empty() ? cmpfill::layout_format_for_path(conv_in)
                                                  : cmpfill::layout_format_from_string(conv_from);
      const LayoutFormat to = conv_to.empty() ? cmpfill::layout_format_for_path(conv_out)
                                              : cmpfill::layout_format_from_string(conv_to);
      cmpfill::gds::ReadOptions o;
      if (!conv_top.empty()) o.top_cell = conv_top;
      o.die_layer = conv_die_layer;
      const auto db = cmpfill::read_layout_file(conv_in, from, o);
      const auto bytes = cmpfill::serialize_layout(db, to);
      cmpfill::write_file(conv_out, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
      return 0;
    }
  } catch (const cmpfill::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cmpfill::exit_code::error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cmpfill::exit_code::error;
  }
  return cmpfill::exit_code::usage;
}
