#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "fixture.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic 37-country raw CSV"};
  std::string out = "data/synthetic_raw.csv";
  std::uint64_t seed = 7;
  app.add_option("--out", out, "output path")->capture_default_str();
  app.add_option("--seed", seed, "generator seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  vacstrat::fixture::Options opt;
  opt.seed = seed;
  const std::filesystem::path path(out);
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    std::cerr << "cannot write " << out << '\n';
    return 1;
  }
  f << vacstrat::fixture::raw_csv(opt);
  return 0;
}
