// placeholder; full benchmark below
#include <benchmark/benchmark.h>
BENCHMARK_MAIN();
