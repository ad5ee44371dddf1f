#include <iostream>
#include <string>
#include <vector>

#include "mannerist/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return mannerist::run_cli(args, std::cout, std::cerr);
}
