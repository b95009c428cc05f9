#pragma once

#define PAIRCORR_VERSION "0.1.0"

namespace paircorr {
inline const char* version() { return PAIRCORR_VERSION; }
}
