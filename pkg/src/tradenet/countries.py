"""Country universe for the intra-African trade network."""

from __future__ import annotations

import re

from .exceptions import ValidationError

AFRICAN_COUNTRIES = {
    "DZA": "Algeria", "AGO": "Angola", "BEN": "Benin", "BWA": "Botswana",
    "BFA": "Burkina Faso", "BDI": "Burundi", "CPV": "Cabo Verde",
    "CMR": "Cameroon", "CAF": "Central African Republic", "TCD": "Chad",
    "COM": "Comoros", "COG": "Congo", "CIV": "Cote d'Ivoire",
    "COD": "D. R. Congo", "DJI": "Djibouti", "EGY": "Egypt",
    "GNQ": "Equatorial Guinea", "ERI": "Eritrea", "SWZ": "Eswatini",
    "ETH": "Ethiopia", "GAB": "Gabon", "GMB": "Gambia", "GHA": "Ghana",
    "GIN": "Guinea", "GNB": "Guinea-Bissau", "KEN": "Kenya", "LSO": "Lesotho",
    "LBR": "Liberia", "LBY": "Libya", "MDG": "Madagascar", "MWI": "Malawi",
    "MLI": "Mali", "MRT": "Mauritania", "MUS": "Mauritius", "MAR": "Morocco",
    "MOZ": "Mozambique", "NAM": "Namibia", "NER": "Niger", "NGA": "Nigeria",
    "RWA": "Rwanda", "STP": "Sao Tome and Principe", "SEN": "Senegal",
    "SYC": "Seychelles", "SLE": "Sierra Leone", "SOM": "Somalia",
    "ZAF": "South Africa", "SSD": "South Sudan", "SDN": "Sudan",
    "TZA": "Tanzania", "TGO": "Togo", "TUN": "Tunisia", "UGA": "Uganda",
    "ZMB": "Zambia", "ZWE": "Zimbabwe",
}

# countries that only exist from a given year onwards
FIRST_YEAR = {"SSD": 2012}

# Regional economic communities, in a fixed column order.
RECS = ("CEN-SAD", "ECCAS", "UMA", "ECOWAS", "SADC", "IGAD", "EAC", "COMESA")

_CODE = re.compile(r"^[A-Z]{3}$")


def check_country_code(code):
    """Return ``code`` if it is three uppercase ASCII letters, else raise."""
    if not isinstance(code, str) or not _CODE.match(code):
        raise ValidationError(f"invalid country code {code!r}")
    return code


class CountryUniverse:
    """Ordered registry of country codes, optionally time-varying.

    Parameters
    ----------
    codes : iterable of str
        Country codes. Duplicates are rejected.
    first_year : dict, optional
        Map from code to the first calendar year the country exists.
    """

    def __init__(self, codes, first_year=None):
        codes = [check_country_code(c) for c in codes]
        if len(set(codes)) != len(codes):
            raise ValidationError("duplicate country codes in universe")
        self.codes = tuple(sorted(codes))
        self._members = frozenset(codes)
        self.first_year = dict(first_year or {})

    @classmethod
    def default(cls):
        return cls(AFRICAN_COUNTRIES, FIRST_YEAR)

    @classmethod
    def from_file(cls, path):
        """Read one code per line; ``#`` starts a comment; ``CODE,YEAR`` sets a first year."""
        codes, first = [], {}
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = [p.strip() for p in line.split(",")]
                codes.append(parts[0])
                if len(parts) > 1 and parts[1]:
                    first[parts[0]] = int(parts[1])
        return cls(codes, first)

    def nodes(self, year=None):
        if year is None:
            return self.codes
        return tuple(c for c in self.codes if self.first_year.get(c, year) <= year)

    def __contains__(self, code):
        return code in self._members

    def __len__(self):
        return len(self.codes)

    def __repr__(self):
        return f"CountryUniverse({len(self.codes)} countries)"
