// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cstdio>
#include <exception>
#include <set>

#include "acceptance.hpp"

using namespace ncsl::acceptance;

// Usage: ncsl_acceptance [criterion-id ...]. Prints one line per criterion.
// Exit status: 1 if any criterion fails, 77 if none fail but some are blocked.
int main(int argc, char** argv) {
  std::vector<Criterion> all = local_criteria();
  for (auto& c : cifar_criteria()) all.push_back(std::move(c));
  std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    bool known = false;
    for (const auto& c : all) known |= c.id == w;
    if (!known) {
      std::fprintf(stderr, "unknown criterion '%s'\n", w.c_str());
      return 2;
    }
  }
  int failed = 0, blocked = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.verdict == Verdict::pass && c.budget_s > 0 && secs > c.budget_s) {
      o.verdict = Verdict::fail;
      o.detail += str("; runtime ", secs, " s exceeds ", c.budget_s, " s");
    }
    const char* v = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "BLOCKED";
    std::printf("criterion %-3s %-8s %-44s [%.1f s] %s\n", c.id.c_str(), v, c.title.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
    failed += o.verdict == Verdict::fail;
    blocked += o.verdict == Verdict::blocked;
  }
  if (failed) return 1;
  return blocked ? 77 : 0;
}
