#include "semdet/cli/app.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return semdet::cli::run(argc, argv, std::cout, std::cerr);
}
