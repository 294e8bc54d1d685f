#pragma once

#include "cpgp/basis.hpp"
#include "cpgp/error.hpp"
#include "cpgp/estimator.hpp"
#include "cpgp/kernel.hpp"
#include "cpgp/likelihood.hpp"
#include "cpgp/oracle.hpp"
#include "cpgp/oracle_suite.hpp"
#include "cpgp/predictor.hpp"
#include "cpgp/signals.hpp"
#include "cpgp/structured_linalg.hpp"
