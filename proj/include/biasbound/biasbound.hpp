#pragma once

#include "biasbound/classify.hpp"
#include "biasbound/error.hpp"
#include "biasbound/measures.hpp"
#include "biasbound/oracle.hpp"
#include "biasbound/sensitivity.hpp"
