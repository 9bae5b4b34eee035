#include <iostream>
#include <string>
#include <vector>

#include "gazedecouple/cli.hpp"
#include "gazedecouple/config.hpp"

int main(int argc, char** argv) {
    std::ios::sync_with_stdio(true);
    std::vector<std::string> args(argv + 1, argv + argc);
    return gazedecouple::run_cli(args, std::cout, std::cerr, gazedecouple::current_environment());
}
