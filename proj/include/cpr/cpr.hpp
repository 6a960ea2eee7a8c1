#pragma once

#include "cpr/causal.hpp"
#include "cpr/error.hpp"
#include "cpr/harness.hpp"
#include "cpr/kmeans.hpp"
#include "cpr/model.hpp"
#include "cpr/partition.hpp"
#include "cpr/perturb.hpp"
#include "cpr/program.hpp"
#include "cpr/protocol.hpp"
#include "cpr/rerank.hpp"
#include "cpr/resources.hpp"
#include "cpr/spectral.hpp"
#include "cpr/tokenizer.hpp"
#include "cpr/toy_model.hpp"
