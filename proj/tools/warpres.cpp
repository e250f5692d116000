#include <iostream>

#include "warpres/cli.hpp"

int main(int argc, char** argv) {
    return warpres::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
