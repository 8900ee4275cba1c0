// Runs every acceptance criterion and prints one line per criterion.
// Exit status is the number of failed criteria (capped at 1 for ctest).

#include <cstdio>
#include <cstdlib>
#include <string>

#include "qnoise/acceptance.hpp"

int main(int argc, char** argv) {
  qnoise::acceptance::Options opt;
  opt.log = [](const std::string& m) { std::fprintf(stderr, "  .. %s\n", m.c_str()); };
  qnoise::acceptance::Suite suite(opt);
  int failed = 0;
  auto report = [&](const qnoise::acceptance::CriterionResult& r) {
    std::printf("%s\n", qnoise::acceptance::format_line(r).c_str());
    std::fflush(stdout);
    failed += r.passed ? 0 : 1;
  };
  if (argc > 1) {
    for (int i = 1; i < argc; ++i) report(suite.run(std::atoi(argv[i])));
  } else {
    suite.run_all(report);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
