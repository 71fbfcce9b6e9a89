#include <iostream>

#include "naxray/cli.hpp"

int main(int argc, char** argv)
{
    return naxray::cli::run(argc, argv, std::cout, std::cerr);
}
