#pragma once

#include "contrasim/augmentor.hpp"
#include "contrasim/checkpoint.hpp"
#include "contrasim/config.hpp"
#include "contrasim/corpus.hpp"
#include "contrasim/date.hpp"
#include "contrasim/digest.hpp"
#include "contrasim/embed.hpp"
#include "contrasim/error.hpp"
#include "contrasim/heads.hpp"
#include "contrasim/http_providers.hpp"
#include "contrasim/mlp.hpp"
#include "contrasim/projnet.hpp"
#include "contrasim/retrieval.hpp"
#include "contrasim/rng.hpp"
#include "contrasim/simscore.hpp"
#include "contrasim/spacemetrics.hpp"
#include "contrasim/tfidf.hpp"
