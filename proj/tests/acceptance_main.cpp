// Acceptance harness: runs the numbered criteria given on the command line
// (all twelve when none are given) and prints one PASS/FAIL line per
// criterion. Exits nonzero if any criterion fails.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "expfun/acceptance.hpp"

int main(int argc, char** argv) {
    std::vector<int> ids;
    unsigned workers = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--workers") == 0 && i + 1 < argc) {
            workers = static_cast<unsigned>(std::strtoul(argv[++i], nullptr, 10));
            continue;
        }
        char* end = nullptr;
        const long v = std::strtol(argv[i], &end, 10);
        if (end == argv[i] || *end != '\0' || v < 1 || v > 12) {
            std::fprintf(stderr, "usage: %s [--workers N] [criterion ids in 1..12]\n", argv[0]);
            return 2;
        }
        ids.push_back(static_cast<int>(v));
    }
    try {
        const int failures = expfun::acceptance::run(ids, workers, std::cout);
        return failures == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance run aborted: %s\n", e.what());
        return 1;
    }
}
