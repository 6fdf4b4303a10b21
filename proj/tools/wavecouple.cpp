#include <wavecouple/cli.hpp>

int main(int argc, char** argv) { return wavecouple::cli::run(argc, argv); }
