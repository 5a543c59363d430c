#include <iostream>
#include <string>
#include <vector>

#include "npc/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return npc::run_cli(args, std::cout, std::cerr);
}
