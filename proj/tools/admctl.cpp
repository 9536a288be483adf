#include <iostream>

#include <CLI11.hpp>

#include "adm/sweep.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out, cache, sector;
  int jobs = 0;
  long long seed = -1;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config,-c", o.config, "JSON config file")->required()->check(CLI::ExistingFile);
  sub->add_option("--out,-o", o.out, "output directory");
  sub->add_option("--cache", o.cache, "cache directory");
  sub->add_option("--jobs,-j", o.jobs, "worker threads")->check(CLI::Range(1, 1024));
  sub->add_option("--seed", o.seed, "random seed")->check(CLI::NonNegativeNumber);
  sub->add_option("--sector", o.sector, "parity sector")->check(CLI::IsMember({"even", "odd", "full"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral and dynamical sweeps of the dissipative anisotropic Dicke model"};
  app.set_version_flag("--version", adm::cli::kVersionTag);
  app.require_subcommand(1);

  const std::vector<adm::cli::Experiment> kinds = {
      adm::cli::Experiment::Spectrum,     adm::cli::Experiment::GapScaling, adm::cli::Experiment::PrMap,
      adm::cli::Experiment::SpacingStats, adm::cli::Experiment::Dynamics,   adm::cli::Experiment::CriticalLine};
  Overrides o;
  std::vector<CLI::App*> subs;
  for (auto k : kinds) {
    auto* sub = app.add_subcommand(adm::cli::to_string(k));
    add_common(sub, o);
    subs.push_back(sub);
  }
  CLI11_PARSE(app, argc, argv);

  std::size_t which = 0;
  while (!subs[which]->parsed()) ++which;

  try {
    auto cfg = adm::cli::load_config(o.config, kinds[which]);
    if (!o.out.empty()) cfg.out = o.out;
    if (!o.cache.empty()) cfg.cache = o.cache;
    if (o.jobs > 0) cfg.jobs = o.jobs;
    if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
    if (!o.sector.empty()) cfg.sector = adm::sector_from_string(o.sector);
    const int code = adm::cli::run(cfg);
    if (code != 0) std::cerr << "admctl: some tasks failed, see " << (cfg.out / "manifest.json").string() << '\n';
    return code;
  } catch (const adm::cli::ConfigError& e) {
    std::cerr << "admctl: config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "admctl: " << e.what() << '\n';
    return 1;
  }
}
