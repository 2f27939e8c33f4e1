#pragma once

namespace safecover {

// Execution mode for the data-parallel kernels. Every kernel has a serial
// reference path and an OpenMP path; both compute each output element from
// an iteration-independent expression, so the results are bit-identical
// regardless of mode or thread count.
enum class Exec { serial, parallel };

Exec default_exec();
void set_default_exec(Exec mode);

}  // namespace safecover
