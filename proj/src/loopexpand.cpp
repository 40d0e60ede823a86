#include "rfloop/loopexpand.hpp"

namespace rfloop {

std::string_view to_string(Observable o) {
  switch (o) {
    case Observable::train:
      return "train";
    case Observable::test:
      return "test";
    case Observable::gap:
      return "gap";
  }
  return "unknown";
}

}  // namespace rfloop
