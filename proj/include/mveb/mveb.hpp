#pragma once

#include "mveb/encoder.hpp"
#include "mveb/entropy_grad.hpp"
#include "mveb/error.hpp"
#include "mveb/experiments.hpp"
#include "mveb/info_oracle.hpp"
#include "mveb/kernels.hpp"
#include "mveb/losses.hpp"
#include "mveb/sphere_vmf.hpp"
#include "mveb/stein_score.hpp"
#include "mveb/synth_data.hpp"
#include "mveb/train.hpp"
#include "mveb/verify.hpp"
