// Renders the first-layer kernels of a freshly initialized model as flow
// field drawings, one SVG per consecutive frame pair, into ./kernel_gallery.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "egoflow/egoflow.hpp"

using namespace egoflow;

int main(int argc, char** argv) {
  ensure_blas_core(argv);

  const int kernel = argc > 1 ? std::atoi(argv[1]) : 0;
  NetworkModel model = make_standard_model({"a", "b"}, 7);

  std::filesystem::create_directories("kernel_gallery");
  const std::vector<std::string> pages = render_kernel_flowfields(model, kernel);
  for (std::size_t p = 0; p < pages.size(); ++p) {
    const std::string path = "kernel_gallery/kernel_" + std::to_string(kernel) +
                             "_pair_" + std::to_string(p) + ".svg";
    std::ofstream(path) << pages[p];
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}
