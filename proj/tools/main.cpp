// SPDX-License-Identifier: Apache-2.0
#include "sepipe/cli.h"

int main(int argc, char** argv) { return sepipe::run_cli(argc, argv); }
