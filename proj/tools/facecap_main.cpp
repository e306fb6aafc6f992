#include <iostream>
#include <string>
#include <vector>

#include "facecap/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return facecap::run_cli(args, std::cout, std::cerr);
}
