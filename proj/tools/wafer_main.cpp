#include "wafer_app/commands.hpp"

int main(int argc, char** argv) { return wafer::app::run_cli(argc, argv); }
