from setuptools import setup, find_packages
setup (
	version = "0.3.0",
	name = "actlab",
	packages=find_packages(exclude=['doc', 'test*']),
	include_package_data=True,
	install_requires=[
		"numpy>=1.20",
		"jsonschema>=2.5.1",
		"toml>=0.9.4",
		"yappi>=0.98",
	],
	scripts=['actlab.py'],
)
