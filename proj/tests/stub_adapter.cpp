// Minimal adapter speaking the predictor wire protocol over stdin/stdout.
//   stub_adapter [--prob P] [--score] [--version N] [--classes C]
//                [--short] [--non-numeric] [--alter-kept] [--silent]

#include <cstdlib>
#include <iostream>
#include <string>

#include "stub_protocol.hpp"

int main(int argc, char** argv) {
    stub::Options o;
    bool silent = false;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--prob" && i + 1 < argc) o.prob = std::atof(argv[++i]);
        else if (a == "--version" && i + 1 < argc) o.version = std::atoi(argv[++i]);
        else if (a == "--classes" && i + 1 < argc) o.classes = std::atoi(argv[++i]);
        else if (a == "--score") o.score = true;
        else if (a == "--short") o.short_reply = true;
        else if (a == "--non-numeric") o.non_numeric = true;
        else if (a == "--alter-kept") o.alter_kept = true;
        else if (a == "--silent") silent = true;
    }
    std::string line;
    while (std::getline(std::cin, line)) {
        if (silent) continue;
        std::cout << stub::reply(line, o) << '\n' << std::flush;
    }
    return 0;
}
