#include <iostream>
#include <string>
#include <vector>

#include "escape_dim/experiment.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return escape_dim::run_cli(args, std::cout, std::cerr);
}
