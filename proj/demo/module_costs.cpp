// Parameter and FLOP breakdown of the three variants at the 64x64 reference geometry.

#include <iomanip>
#include <iostream>

#include "gmg/gmg.hpp"

using namespace gmg;

int main() {
  std::cout << std::left << std::setw(8) << "variant" << std::setw(12) << "params" << std::setw(14) << "GFLOPs/step";
  for (const char* m : {"cell", "gfm", "sam", "mgm"}) std::cout << std::setw(10) << m;
  std::cout << "\n";
  for (const char* v : {"s", "m", "L"}) {
    const ProfileResult r = profile(ModelConfig::for_variant(v), 0);
    std::cout << std::setw(8) << (std::string("GMG-") + v) << std::setw(12) << r.params << std::setw(14) << std::setprecision(4)
              << r.flops / 1e9;
    for (const char* m : {"cell", "gfm", "sam", "mgm"}) std::cout << std::setw(10) << r.module_params.at(m);
    std::cout << "\n";
  }
}
