// SPDX-License-Identifier: Apache-2.0
#include <reactod/cli.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    return reactod::run_cli(argc, argv, std::cin, std::cout, std::cerr);
}
