#include <iostream>

#include "gansic/cli.hpp"

int main(int argc, char** argv) {
    return gansic::run_cli(argc, argv, std::cout, std::cerr);
}
