#pragma once

#include "glmb/assignment.hpp"
#include "glmb/error.hpp"
#include "glmb/filter.hpp"
#include "glmb/gaussian_mixture.hpp"
#include "glmb/glmb_density.hpp"
#include "glmb/gm_track.hpp"
#include "glmb/k_shortest.hpp"
#include "glmb/label.hpp"
#include "glmb/model.hpp"
#include "glmb/ospa.hpp"
#include "glmb/scenario.hpp"
