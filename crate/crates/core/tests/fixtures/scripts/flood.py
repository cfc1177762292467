def main(html):
    return [("s" * 1000, "p", str(i)) for i in range(5000)]
