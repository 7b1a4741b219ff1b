// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "videomemory/cli.hpp"

int main(int argc, char** argv) { return videomemory::run_cli(argc, argv, std::cout, std::cerr); }
