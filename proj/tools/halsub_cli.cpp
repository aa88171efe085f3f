#include "halsub/cli.hpp"

int main(int argc, char** argv)
{
    return halsub::cli::dispatch(argc, argv);
}
