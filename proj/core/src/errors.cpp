#include "stochreg/errors.hpp"

namespace stochreg {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::divergence:
      return 3;
    case ErrorKind::io:
      return 5;
    default:
      return 4;
  }
}

}  // namespace stochreg
