#include <iostream>

#include "mixsig/cli.hpp"

int main(int argc, char** argv) {
    return mixsig::cli::run(argc, argv, std::cout, std::cerr);
}
