#include "panelvit/error.hpp"

namespace panelvit {

int exit_code(Error::Kind kind) noexcept {
  switch (kind) {
    case Error::Kind::data:
      return 2;
    case Error::Kind::io:
      return 3;
    case Error::Kind::contract:
    case Error::Kind::dimension:
    case Error::Kind::config:
    case Error::Kind::parameter:
      break;
  }
  return 1;
}

}  // namespace panelvit
