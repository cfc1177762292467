def main(html):
    return []
