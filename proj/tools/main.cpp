#include "curvflow/report.hpp"

int main(int argc, char** argv) { return curvflow::run_cli(argc, argv); }
