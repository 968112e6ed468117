#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "epdyn/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Exact and master-equation dynamics of dissipative quantum-dot chains"};
  app.set_version_flag("--version", std::string(epd::kVersion));
  epd::cli::Options opt;
  std::string formats;
  std::string out;
  app.add_option("command", opt.command, "spectrum | dynamics | sweep | mpemba | chain")
      ->required()
      ->check(CLI::IsMember(epd::cli::commands()));
  app.add_option("--config", opt.config_path, "INI configuration file")->required();
  app.add_option("--out", out, "output directory (overrides [output] directory)");
  app.add_option("--format", formats, "comma-separated subset of csv,json,svg");
  app.add_flag("--with-me", opt.with_me, "add master-equation columns (dynamics)");
  app.add_flag("--with-oracle", opt.with_oracle, "add finite-bath oracle columns (dynamics)");
  app.add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return epd::cli::kConfigError;
  }
  if (!out.empty()) opt.out = out;
  if (!formats.empty()) opt.formats = epd::config::split_list(formats);
  return epd::cli::run(opt, std::cerr);
}
