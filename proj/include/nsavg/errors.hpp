#pragma once

#include <stdexcept>
#include <string>

namespace nsavg {

// Unparseable or invalid configuration (CLI exit 2).
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Condition A4 margin not positive (CLI exit 3).
class admissibility_error : public std::runtime_error {
public:
    admissibility_error(const std::string& msg, double margin)
        : std::runtime_error(msg), margin(margin) {}
    double margin;
};

// Checkpoint/config mismatch on resume (CLI exit 4).
class resume_mismatch_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A diagnostic detected a violation (CLI exit 5).
class diagnostic_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A sample path left the representable range.
class blow_up_error : public std::runtime_error {
public:
    blow_up_error(double t, double x_norm, double y_norm)
        : std::runtime_error("sample blew up at t = " + std::to_string(t) +
                             " (|X| = " + std::to_string(x_norm) +
                             ", |Y| = " + std::to_string(y_norm) + ")"),
          t(t),
          x_norm(x_norm),
          y_norm(y_norm) {}
    double t, x_norm, y_norm;
};

}  // namespace nsavg
