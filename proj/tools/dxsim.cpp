#include <dxsim/cli.hpp>

int main(int argc, char** argv) { return dxsim::cli::run(argc, argv); }
