// Mints every fixture from the oracles and compares with fixtures/ on disk.
//   run_oracles [--fixtures DIR] [--write]

#include <CLI11.hpp>
#include <iostream>

#include "mint.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Regenerate oracle fixtures and check them for drift"};
  std::string dir = FIXTURE_DIR;
  bool write = false;
  app.add_option("--fixtures", dir, "fixture directory");
  app.add_flag("--write", write, "overwrite the checked-in fixtures");
  CLI11_PARSE(app, argc, argv);

  const oracle::Minted fresh = oracle::mint_all();
  std::size_t count = 0;
  for (const auto& [module, doc] : fresh.modules) count += doc["fixtures"].size();
  if (write) {
    oracle::write_minted(fresh, dir);
    std::cout << "wrote " << count << " fixtures to " << dir << "\n";
    return 0;
  }
  const auto diffs = oracle::check_drift(fresh, dir);
  for (const auto& d : diffs) std::cout << "DRIFT " << d << "\n";
  std::cout << count << " fixtures, " << diffs.size() << " drifted\n";
  return diffs.empty() ? 0 : 1;
}
