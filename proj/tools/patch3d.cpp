#include "patch3d/commands.hpp"

int main(int argc, char** argv)
{
    return patch3d::run_cli(argc, argv);
}
