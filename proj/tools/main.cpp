#include "hpgnn/cli.hpp"

#include <iostream>
#include <vector>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hpgnn::cli::dispatch(args, std::cout, std::cerr);
}
