#!/usr/bin/env python3
"""Setup verification script - Checks the environment before running ftrsec."""
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))


def check_packages():
    """Check the numerical stack imports."""
    print("\nChecking packages...")
    errors = []

    for name in ("numpy", "scipy", "dotenv", "structlog"):
        try:
            module = __import__(name)
            print(f"  ✅ {name} {getattr(module, '__version__', '')}".rstrip())
        except ImportError as e:
            errors.append(f"  ❌ {name} not importable: {e}. Run: pip install -r requirements.txt")

    return errors


def check_configuration():
    """Check runtime configuration (.env is optional)."""
    print("\nChecking configuration...")
    errors = []

    if Path(".env").exists():
        print("  ✅ .env file exists")
    else:
        print("  ⚠️  No .env file, using defaults (see config.example.env)")

    try:
        from src.utils.config import Config

        config = Config.from_env()
        config_errors = config.validate()
        if config_errors:
            for err in config_errors:
                errors.append(f"  ❌ {err}")
        else:
            print("  ✅ Configuration valid")
            print(f"     Workers: {config.workers}")
            print(f"     Coefficient cache: {config.coefficient_cache or '(memory only)'}")
    except Exception as e:
        errors.append(f"  ❌ Error loading config: {e}")

    return errors


def check_scenario():
    """Check that the shipped example scenario loads."""
    print("\nChecking example scenario...")
    errors = []

    try:
        from src.utils.errors import ConfigError
        from src.utils.scenario_config import ScenarioConfig

        path = Path(__file__).parent / "docs" / "scenario.example.cfg"
        scenario = ScenarioConfig.load(path).scenario()
        print(f"  ✅ {path.name} loaded")
        print(f"     rho = {scenario.rho:.4g}, Theta = {scenario.theta:.4g}")
    except ConfigError as e:
        errors.extend(f"  ❌ {message}" for message in e.messages)
    except Exception as e:
        errors.append(f"  ❌ Error loading example scenario: {e}")

    return errors


def check_cache():
    """Check the coefficient cache backend (Redis when enabled)."""
    print("\nChecking coefficient cache...")
    errors = []

    try:
        from src.channel.coefficient_store import RedisCoefficientStore, create_coefficient_store
        from src.utils.config import Config

        config = Config.from_env()
        store = create_coefficient_store(config)
        if config.use_redis and not isinstance(store, RedisCoefficientStore):
            errors.append(f"  ❌ Redis not reachable at {config.redis_url}")
        else:
            print(f"  ✅ {type(store).__name__} ready ({len(store)} parameter sets cached)")
    except Exception as e:
        errors.append(f"  ❌ Error opening the coefficient cache: {e}")

    return errors


def check_numerics():
    """Smoke-test the series on one reference parameter set."""
    print("\nChecking numerics...")
    errors = []

    try:
        from src.channel.ftr_model import FtrParams, build_coefficient_table

        table = build_coefficient_table(FtrParams(m=15.5, k=5.0, delta=0.4, sigma2=0.5), 1e-5)
        if table.n_trunc == 24:
            print(f"  ✅ Truncation order N=24, eps={table.eps:.4g}")
        else:
            errors.append(f"  ❌ Expected truncation order 24, got {table.n_trunc}")
    except Exception as e:
        errors.append(f"  ❌ Error evaluating the FTR series: {e}")

    return errors


def main():
    """Run all checks."""
    print("=" * 60)
    print("ftrsec - Setup Verification")
    print("=" * 60)

    all_errors = []
    all_errors.extend(check_packages())
    all_errors.extend(check_configuration())
    all_errors.extend(check_scenario())
    all_errors.extend(check_cache())
    all_errors.extend(check_numerics())

    # Summary
    print("\n" + "=" * 60)
    if all_errors:
        print("❌ Setup verification FAILED")
        print("=" * 60)
        print("\nErrors found:")
        for error in all_errors:
            print(error)
        return 1
    else:
        print("✅ Setup verification PASSED")
        print("=" * 60)
        print("\nAll checks passed! You can now run:")
        print("  ./ftrsec validate --config docs/scenario.example.cfg")
        return 0


if __name__ == "__main__":
    sys.exit(main())
