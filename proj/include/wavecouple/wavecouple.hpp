#pragma once

#include <wavecouple/error.hpp>
#include <wavecouple/spectral.hpp>
#include <wavecouple/nonlinearity.hpp>
#include <wavecouple/random.hpp>
#include <wavecouple/dynamics.hpp>
#include <wavecouple/coupling.hpp>
#include <wavecouple/statistics.hpp>
#include <wavecouple/functionals.hpp>
#include <wavecouple/sampling.hpp>
#include <wavecouple/linear_gaussian.hpp>
#include <wavecouple/bounds.hpp>
#include <wavecouple/estimators.hpp>
#include <wavecouple/verifiers.hpp>
#include <wavecouple/config.hpp>
#include <wavecouple/cli.hpp>
