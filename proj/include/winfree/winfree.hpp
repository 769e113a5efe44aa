#pragma once

// Everything in one include.
#include <winfree/core.hpp>
#include <winfree/io.hpp>
#include <winfree/so_geometry.hpp>
#include <winfree/influence.hpp>
#include <winfree/dynamics.hpp>
#include <winfree/classical_winfree.hpp>
#include <winfree/analysis.hpp>
#include <winfree/equilibria.hpp>
#include <winfree/harness/config.hpp>
#include <winfree/harness/experiments.hpp>
