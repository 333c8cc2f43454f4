#pragma once

namespace qjump {

inline constexpr const char* version = "0.1.0";

}
