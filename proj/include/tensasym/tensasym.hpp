#ifndef TENSASYM_TENSASYM_HPP
#define TENSASYM_TENSASYM_HPP

#include "common.hpp"
#include "fft.hpp"
#include "svf.hpp"
#include "periodic.hpp"
#include "spectrum.hpp"
#include "tensor.hpp"
#include "rng.hpp"
#include "smalldev.hpp"
#include "config.hpp"
#include "commands.hpp"

#endif
