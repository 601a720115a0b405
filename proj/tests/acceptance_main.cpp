#include "acceptance.hpp"

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

// Usage: acceptance_tests [ID ...]
int main(int argc, char** argv) {
  critwalk::acceptance::Options opts;
  opts.threads = std::max(1u, std::thread::hardware_concurrency());
  for (int i = 1; i < argc; ++i) opts.only.push_back(std::atoi(argv[i]));
  opts.on_result = [](const critwalk::acceptance::CriterionResult& r) {
    std::cout << critwalk::acceptance::format_line(r) << std::endl;
  };
  const auto results = critwalk::acceptance::run(opts);
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cout << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
