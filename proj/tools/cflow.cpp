#include "cflow/harness.hpp"

int main(int argc, char** argv) { return cflow::cli_main(argc, argv); }
